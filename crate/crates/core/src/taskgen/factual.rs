//! Factual tasks over the city knowledge base.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde_json::json;

use super::{finalize, require_even, rng_for, Draft, KnowledgeBase, LabeledStatement, Meta, Result, TaskId, TaskgenError};

const EXACT_K1_K2_LEN: usize = 6;

/// Country names that take a definite article inside a sentence.
const WITH_ARTICLE: &[&str] = &[
    "United States",
    "United Kingdom",
    "Netherlands",
    "Philippines",
    "Czech Republic",
    "United Arab Emirates",
    "Dominican Republic",
    "Central African Republic",
    "Bahamas",
    "Maldives",
    "Gambia",
];

/// How a country name reads mid-sentence ("the United States", "France").
pub fn country_phrase(country: &str) -> String {
    if WITH_ARTICLE.contains(&country) {
        format!("the {country}")
    } else {
        country.to_string()
    }
}

fn located(city: &str, country: &str) -> String {
    format!("the city of {city} is in {}", country_phrase(country))
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Walks the cities in shuffled order, reshuffling after each full pass, so
/// every city is used about equally often.
struct CityCycle<'a> {
    cities: Vec<&'a str>,
    pos: usize,
}

impl<'a> CityCycle<'a> {
    fn new(kb: &'a KnowledgeBase) -> Self {
        let cities: Vec<&str> = kb.entries().iter().map(|(c, _)| c.as_str()).collect();
        let pos = cities.len();
        Self { cities, pos }
    }

    fn next(&mut self, rng: &mut impl Rng) -> &'a str {
        if self.pos == self.cities.len() {
            self.cities.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.cities[self.pos - 1]
    }
}

fn wrong_country<'a>(kb: &'a KnowledgeBase, correct: &str, rng: &mut impl Rng) -> &'a str {
    let others: Vec<&str> = kb.countries().into_iter().filter(|c| *c != correct).collect();
    others[rng.random_range(0..others.len())]
}

fn require_two_countries(kb: &KnowledgeBase) -> Result<()> {
    if kb.num_countries() < 2 {
        Err(TaskgenError::SingleCountry)
    } else {
        Ok(())
    }
}

fn country_meta(city: &str, country: &str) -> Meta {
    let mut meta = Meta::new();
    meta.insert("city".into(), json!(city));
    meta.insert("country".into(), json!(country));
    meta
}

/// F0: "The city of X is in Y." Half true, half with a uniformly drawn
/// wrong country.
pub fn gen_f0(kb: &KnowledgeBase, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    require_even(n)?;
    require_two_countries(kb)?;
    let mut rng = rng_for(seed);
    let mut cycle = CityCycle::new(kb);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let city = cycle.next(&mut rng);
        let truth = kb.country_of(city).expect("city from kb");
        let country = if label { truth } else { wrong_country(kb, truth, &mut rng) };
        drafts.push(Draft {
            text: format!("{}.", capitalize(&located(city, country))),
            label,
            meta: country_meta(city, country),
        });
    }
    Ok(finalize(TaskId::F0, drafts, &mut rng))
}

/// F1: "The city of X is not in Y." True iff Y is not X's country.
pub fn gen_f1(kb: &KnowledgeBase, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    require_even(n)?;
    require_two_countries(kb)?;
    let mut rng = rng_for(seed);
    let mut cycle = CityCycle::new(kb);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let city = cycle.next(&mut rng);
        let truth = kb.country_of(city).expect("city from kb");
        let country = if label { wrong_country(kb, truth, &mut rng) } else { truth };
        drafts.push(Draft {
            text: format!("The city of {city} is not in {}.", country_phrase(country)),
            label,
            meta: country_meta(city, country),
        });
    }
    Ok(finalize(TaskId::F1, drafts, &mut rng))
}

/// F2: conjunction of two located-in facts about distinct cities. False
/// items cycle through the three false rows of the AND truth table.
pub fn gen_f2(kb: &KnowledgeBase, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    require_even(n)?;
    require_two_countries(kb)?;
    if kb.len() < 2 {
        return Err(TaskgenError::KbTooSmall("F2 needs two distinct cities".into()));
    }
    const FALSE_ROWS: [(bool, bool); 3] = [(false, true), (true, false), (false, false)];
    let mut rng = rng_for(seed);
    let mut cycle = CityCycle::new(kb);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let (first_ok, second_ok) = if label {
            (true, true)
        } else {
            FALSE_ROWS[(i - n / 2) % 3]
        };
        let x1 = cycle.next(&mut rng);
        let mut x2 = cycle.next(&mut rng);
        while x2 == x1 {
            x2 = cycle.next(&mut rng);
        }
        let mut stated = |city: &str, ok: bool| {
            let truth = kb.country_of(city).expect("city from kb");
            if ok {
                truth
            } else {
                wrong_country(kb, truth, &mut rng)
            }
        };
        let y1 = stated(x1, first_ok);
        let y2 = stated(x2, second_ok);
        let mut meta = Meta::new();
        meta.insert("cities".into(), json!([x1, x2]));
        meta.insert("countries".into(), json!([y1, y2]));
        drafts.push(Draft {
            text: format!(
                "It is the case both that {} and {}.",
                located(x1, y1),
                located(x2, y2)
            ),
            label,
            meta,
        });
    }
    Ok(finalize(TaskId::F2, drafts, &mut rng))
}

/// Draws `count` distinct elements in random order.
fn sample<'a>(pool: &[&'a str], count: usize, rng: &mut impl Rng) -> Vec<&'a str> {
    index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn cities_outside<'a>(kb: &'a KnowledgeBase, excluded: &[&str]) -> Vec<&'a str> {
    kb.entries()
        .iter()
        .filter(|(_, country)| !excluded.contains(&country.as_str()))
        .map(|(city, _)| city.as_str())
        .collect()
}

/// Exact-k counting over a list of `list_len` cities: "Exactly k of the
/// following cities are in C: …". Stated k values cycle over `0..=list_len`
/// across the whole dataset, so both classes are balanced across k. False
/// items draw the true count m uniformly from the other values.
pub fn gen_exact_k(kb: &KnowledgeBase, n: usize, list_len: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    if !(2..=5).contains(&list_len) {
        return Err(TaskgenError::InvalidListLen(list_len));
    }
    require_even(n)?;
    if list_len > kb.len() {
        return Err(TaskgenError::KbTooSmall(format!(
            "list length {list_len} exceeds {} cities",
            kb.len()
        )));
    }
    let eligible: Vec<(&str, Vec<&str>, Vec<&str>)> = kb
        .countries()
        .into_iter()
        .filter_map(|c| {
            let inside: Vec<&str> = kb.cities_in(c).iter().map(String::as_str).collect();
            let outside = cities_outside(kb, &[c]);
            (inside.len() >= list_len && outside.len() >= list_len).then_some((c, inside, outside))
        })
        .collect();
    if eligible.is_empty() {
        return Err(TaskgenError::KbTooSmall(format!(
            "no country has {list_len} cities with {list_len} more cities elsewhere"
        )));
    }

    let mut rng = rng_for(seed);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let stated = i % (list_len + 1);
        let count = if label {
            stated
        } else {
            let others: Vec<usize> = (0..=list_len).filter(|&m| m != stated).collect();
            others[rng.random_range(0..others.len())]
        };
        let (country, inside, outside) = &eligible[rng.random_range(0..eligible.len())];
        let mut list = sample(inside, count, &mut rng);
        list.extend(sample(outside, list_len - count, &mut rng));
        list.shuffle(&mut rng);

        let mut meta = Meta::new();
        meta.insert("country".into(), json!(country));
        meta.insert("cities".into(), json!(list));
        meta.insert("stated_k".into(), json!(stated));
        meta.insert("true_count".into(), json!(count));
        meta.insert("list_len".into(), json!(list_len));
        drafts.push(Draft {
            text: format!(
                "Exactly {stated} of the following cities are in {}: {}.",
                country_phrase(country),
                list.join(", ")
            ),
            label,
            meta,
        });
    }
    let task = match list_len {
        2 => TaskId::F3,
        3 => TaskId::F4N3,
        4 => TaskId::F4N4,
        _ => TaskId::F4,
    };
    Ok(finalize(task, drafts, &mut rng))
}

/// Wrong (k1, k2) pairs for a true count (m1, m2). Half of the false items
/// perturb both coordinates, the other half exactly one of them. Stated
/// counts never sum above the list length.
fn perturb_counts(m1: usize, m2: usize, rng: &mut impl Rng) -> (usize, usize) {
    let len = EXACT_K1_K2_LEN;
    let first: Vec<_> = (0..=len - m2).filter(|&k| k != m1).map(|k| (k, m2)).collect();
    let second: Vec<_> = (0..=len - m1).filter(|&k| k != m2).map(|k| (m1, k)).collect();
    let both: Vec<_> = (0..=len)
        .flat_map(|k1| (0..=len - k1).map(move |k2| (k1, k2)))
        .filter(|&(k1, k2)| k1 != m1 && k2 != m2)
        .collect();
    loop {
        let pool = if rng.random_bool(0.5) {
            &both
        } else if rng.random_bool(0.5) {
            &first
        } else {
            &second
        };
        if !pool.is_empty() {
            return pool[rng.random_range(0..pool.len())];
        }
    }
}

/// F5: exact counts for two countries over a list of six cities.
pub fn gen_exact_k1_k2(kb: &KnowledgeBase, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    require_even(n)?;
    let countries = kb.countries();
    if countries.len() < 2 || kb.len() < EXACT_K1_K2_LEN {
        return Err(TaskgenError::KbTooSmall(
            "F5 needs two countries and at least six cities".into(),
        ));
    }
    let mut rng = rng_for(seed);
    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let label = i < n / 2;
        let (c1, c2, pairs, outside) = {
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > 1000 {
                    return Err(TaskgenError::KbTooSmall(
                        "no pair of countries can fill a six-city list".into(),
                    ));
                }
                let a = rng.random_range(0..countries.len());
                let mut b = rng.random_range(0..countries.len() - 1);
                if b >= a {
                    b += 1;
                }
                let (c1, c2) = (countries[a], countries[b]);
                let n1 = kb.cities_in(c1).len();
                let n2 = kb.cities_in(c2).len();
                let outside = cities_outside(kb, &[c1, c2]);
                let pairs: Vec<(usize, usize)> = (0..=EXACT_K1_K2_LEN.min(n1))
                    .flat_map(|m1| (0..=(EXACT_K1_K2_LEN - m1).min(n2)).map(move |m2| (m1, m2)))
                    .filter(|&(m1, m2)| EXACT_K1_K2_LEN - m1 - m2 <= outside.len())
                    .collect();
                if !pairs.is_empty() {
                    break (c1, c2, pairs, outside);
                }
            }
        };
        let (m1, m2) = pairs[rng.random_range(0..pairs.len())];
        let (k1, k2) = if label { (m1, m2) } else { perturb_counts(m1, m2, &mut rng) };

        let in1: Vec<&str> = kb.cities_in(c1).iter().map(String::as_str).collect();
        let in2: Vec<&str> = kb.cities_in(c2).iter().map(String::as_str).collect();
        let mut list = sample(&in1, m1, &mut rng);
        list.extend(sample(&in2, m2, &mut rng));
        list.extend(sample(&outside, EXACT_K1_K2_LEN - m1 - m2, &mut rng));
        list.shuffle(&mut rng);

        let mut meta = Meta::new();
        meta.insert("countries".into(), json!([c1, c2]));
        meta.insert("cities".into(), json!(list));
        meta.insert("stated_k".into(), json!([k1, k2]));
        meta.insert("true_count".into(), json!([m1, m2]));
        drafts.push(Draft {
            text: format!(
                "Exactly {k1} of the following cities are in {} and {k2} in {}: {}.",
                country_phrase(c1),
                country_phrase(c2),
                list.join(", ")
            ),
            label,
            meta,
        });
    }
    Ok(finalize(TaskId::F5, drafts, &mut rng))
}
